fn main() {
    std::process::exit(wavesel_cli::run(std::env::args_os()));
}
