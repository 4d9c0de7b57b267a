fn main() {
    std::process::exit(recovery_lab::cli::cli_main(std::env::args_os()));
}
