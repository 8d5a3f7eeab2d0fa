fn main() {
    std::process::exit(hexweb_cli::run(std::env::args_os()));
}
