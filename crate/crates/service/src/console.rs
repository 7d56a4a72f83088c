//! Line-oriented console: one command per line in, event log out.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};
use std::thread;

use xnet_core::command::CommandParser;
use xnet_core::solver::LiveSolver;

/// Reads commands from `input` until end of input, echoing what each line
/// parsed to and printing every log record as a JSON line. Returns the
/// number of lines that failed to parse.
pub fn run_console<R, W>(
    live: LiveSolver,
    parser: &CommandParser,
    input: R,
    out: Arc<Mutex<W>>,
) -> std::io::Result<usize>
where
    R: BufRead,
    W: Write + Send + 'static,
{
    let records = live.subscribe_log();
    let printer = {
        let out = Arc::clone(&out);
        thread::spawn(move || {
            for r in records {
                let line = serde_json::to_string(&r).expect("log records serialize");
                let mut o = out.lock().unwrap_or_else(|e| e.into_inner());
                if writeln!(o, "{line}").and_then(|_| o.flush()).is_err() {
                    break;
                }
            }
        })
    };
    let mut failures = 0;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let reply = match parser.parse(text) {
            Ok(a) => {
                let json = serde_json::to_string(&a).expect("actspecs serialize");
                live.submit(a);
                format!("> {json}")
            }
            Err(e) => {
                failures += 1;
                live.with_solver(|s| s.note_parse_error(text, &e.to_string()));
                format!("! {e}")
            }
        };
        let mut o = out.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(o, "{reply}")?;
        o.flush()?;
    }
    // Dropping the solver closes the log subscription, which ends the printer.
    let mut solver = live.shutdown();
    solver.log_mut().flush();
    drop(solver);
    let _ = printer.join();
    Ok(failures)
}
