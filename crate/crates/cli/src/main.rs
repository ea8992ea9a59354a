fn main() {
    std::process::exit(xorchaos_cli::run(std::env::args_os()));
}
