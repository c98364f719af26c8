fn main() {
    std::process::exit(vigil_cli::run(std::env::args_os(), std::env::vars()));
}
