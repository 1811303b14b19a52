fn main() {
    std::process::exit(recos_cli::main_with(std::env::args_os()));
}
