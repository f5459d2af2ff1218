fn main() {
    std::process::exit(spade_cli::run(std::env::args_os()));
}
