use std::process::ExitCode;

fn main() -> ExitCode {
    match bellstrength::cli::run(std::env::args_os()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some rows did not converge");
            ExitCode::from(1)
        }
        Err(bellstrength::Error::Usage(msg)) => {
            eprint!("{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
