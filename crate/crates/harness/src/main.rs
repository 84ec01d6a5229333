fn main() {
    std::process::exit(steepest_harness::cli::cli_main(std::env::args_os()));
}
