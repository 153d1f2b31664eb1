fn main() {
    std::process::exit(rmft::cli::cli(std::env::args_os()));
}
