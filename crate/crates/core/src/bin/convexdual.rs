fn main() {
    std::process::exit(convexdual::cli::run(std::env::args_os()));
}
