use std::io::{stderr, stdin, stdout};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = cellkit_cli::run(
        &args,
        &mut stdin().lock(),
        &mut stdout().lock(),
        &mut stderr().lock(),
    );
    std::process::exit(code);
}
