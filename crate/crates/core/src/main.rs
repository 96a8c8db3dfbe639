fn main() {
    std::process::exit(circlekit::cli::run(std::env::args_os()));
}
