fn main() {
    let code = masktrack::cli::run(
        std::env::args_os(),
        |k| std::env::var(k).ok(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
