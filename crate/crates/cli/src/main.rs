fn main() {
    std::process::exit(balflow_cli::run(std::env::args_os()));
}
