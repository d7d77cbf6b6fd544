fn main() {
    std::process::exit(motionforge::cli::run(std::env::args_os()));
}
