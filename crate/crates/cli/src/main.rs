use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let code = mpcc_cli::main_with(&argv, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
