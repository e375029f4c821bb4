fn main() {
    let code = reward_uq::harness::cli::cli_main(std::env::args_os());
    std::process::exit(code);
}
