fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let code = policybound::dispatch(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
