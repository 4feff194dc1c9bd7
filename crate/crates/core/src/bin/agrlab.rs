use std::io::Write;
use std::process::ExitCode;

use agrlab::harness::{parse_args, run, HarnessError};

fn main() -> ExitCode {
    let result = parse_args(std::env::args()).and_then(|cli| run(&cli));
    match result {
        Ok(results) => {
            let text = serde_json::to_string_pretty(&results).unwrap_or_default();
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(HarnessError::Usage(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
