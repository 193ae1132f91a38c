fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let (code, out) = hofa_cli::run(&argv);
    print!("{out}");
    std::process::exit(code);
}
