fn main() {
    std::process::exit(udl_cli::run(std::env::args_os()));
}
