fn main() {
    std::process::exit(wavefuse::cli::run(std::env::args_os()));
}
