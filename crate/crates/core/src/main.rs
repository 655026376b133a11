use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = cryptolint::cli::main_with_args(std::env::args_os().skip(1));
    ExitCode::from(code.clamp(0, 255) as u8)
}
