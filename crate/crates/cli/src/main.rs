fn main() {
    std::process::exit(divalign_cli::run(std::env::args_os()));
}
