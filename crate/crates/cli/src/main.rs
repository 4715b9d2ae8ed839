fn main() {
    std::process::exit(probeshake_cli::run(std::env::args_os()));
}
