fn main() {
    std::process::exit(phasebal_cli::run(std::env::args_os()));
}
