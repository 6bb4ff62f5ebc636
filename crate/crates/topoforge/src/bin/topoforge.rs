fn main() {
    std::process::exit(topoforge::cli::run(std::env::args_os()));
}
