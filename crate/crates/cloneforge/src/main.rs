fn main() {
    let code = cloneforge::cli::run_from(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
