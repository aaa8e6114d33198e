fn main() {
    std::process::exit(gbeval::cli::run(std::env::args_os()));
}
