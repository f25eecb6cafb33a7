//! Serves the toy prover over the bridge protocol on stdin/stdout.
//!
//! Usage: `toy-adapter [--suite PATH]`

use std::io;
use std::process::ExitCode;

use tacsearch::bridge::stub;
use tacsearch::toy::ToySuite;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let suite = match args.as_slice() {
        [] => ToySuite::bundled(),
        [flag, path] if flag == "--suite" => {
            let loaded = std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|text| ToySuite::parse(&text).map_err(|e| e.to_string()));
            match loaded {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("toy-adapter: {path}: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        _ => {
            eprintln!("usage: toy-adapter [--suite PATH]");
            return ExitCode::from(2);
        }
    };
    match stub::serve(io::stdin().lock(), io::stdout().lock(), &suite) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("toy-adapter: {e}");
            ExitCode::FAILURE
        }
    }
}
