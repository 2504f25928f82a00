fn main() {
    std::process::exit(stylecolor::cli::cli_main(std::env::args_os()));
}
