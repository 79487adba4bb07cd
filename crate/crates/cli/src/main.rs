fn main() {
    std::process::exit(otsample_cli::run(std::env::args_os()));
}
