use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = cohcsp_cli::run(std::env::args_os());
    if let Some(text) = &outcome.help {
        print!("{text}");
        return ExitCode::SUCCESS;
    }
    println!("{}", outcome.render());
    if let Some(err) = &outcome.stderr {
        eprint!("{err}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
