fn main() {
    std::process::exit(sedfuse::cli::run(std::env::args_os()));
}
