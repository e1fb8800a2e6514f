fn main() {
    std::process::exit(homog::cli::cli_main(std::env::args_os()));
}
