fn main() {
    std::process::exit(geodissip_cli::main_with(std::env::args_os()));
}
