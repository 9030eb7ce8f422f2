fn main() {
    std::process::exit(exosim::cli::cli_main(std::env::args_os()));
}
