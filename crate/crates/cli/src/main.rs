fn main() {
    std::process::exit(scindex_cli::run(std::env::args_os()));
}
