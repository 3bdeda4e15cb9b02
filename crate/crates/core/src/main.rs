fn main() {
    let code = qnsolve::cli::run_cli(std::env::args_os());
    std::process::exit(code);
}
