//! `netgm` command-line front-end.

mod commands;
mod config;
mod error;
mod ingest;
mod output;

use clap::Parser;

use config::{early_out_dir, resolve, Invocation};
use error::{write_error_file, CliError};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let invocation = match Invocation::try_parse() {
        Ok(i) => i,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let (command, opts) = invocation.command.split();
    let out_dir = early_out_dir(&opts);
    let result = resolve(command, opts).and_then(|cfg| {
        if let Some(t) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot start {t} threads: {e}")))?;
        }
        commands::run(&cfg)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("netgm: {e}");
            if let Some(dir) = out_dir {
                if let Err(io) = write_error_file(&dir, &e) {
                    eprintln!("netgm: cannot write error file: {io}");
                }
            }
            std::process::exit(e.exit_code());
        }
    }
}
