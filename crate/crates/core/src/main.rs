fn main() {
    std::process::exit(wormhole_core::cli::cli_main(std::env::args_os()));
}
