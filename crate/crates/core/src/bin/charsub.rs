use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        let _ = writeln!(std::io::stderr(), "{}", charsub::cli::USAGE);
        std::process::exit(1);
    }
    let mut stdout = std::io::stdout().lock();
    let code = charsub::cli::run(&args, &mut stdout);
    std::process::exit(code);
}
