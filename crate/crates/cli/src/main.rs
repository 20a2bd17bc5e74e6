fn main() {
    std::process::exit(infoselect_cli::cli_main(std::env::args_os()));
}
