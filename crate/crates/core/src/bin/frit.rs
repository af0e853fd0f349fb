fn main() {
    std::process::exit(frit::cli::run(std::env::args_os()));
}
