fn main() {
    std::process::exit(lpfcm::cli::cli_main(std::env::args_os()));
}
