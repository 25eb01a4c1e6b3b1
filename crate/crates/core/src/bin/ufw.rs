fn main() {
    std::process::exit(ufw::cli::run(std::env::args_os()));
}
