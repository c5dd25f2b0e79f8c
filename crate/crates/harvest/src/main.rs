fn main() {
    std::process::exit(harvest::run(std::env::args_os()));
}
