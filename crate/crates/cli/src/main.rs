use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (exit, report) = pricehet_cli::execute(args);
    println!("{report:#}");
    ExitCode::from(exit as u8)
}
