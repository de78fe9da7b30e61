fn main() {
    std::process::exit(flashgan_cli::main_with(std::env::args_os()));
}
