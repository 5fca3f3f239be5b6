fn main() {
    std::process::exit(pipewave::cli::run(std::env::args_os()));
}
