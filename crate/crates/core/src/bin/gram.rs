fn main() {
    std::process::exit(gram::cli::run(std::env::args_os()));
}
