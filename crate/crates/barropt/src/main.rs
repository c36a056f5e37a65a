fn main() {
    std::process::exit(barropt::cli::run(std::env::args_os()));
}
