use des_server::ServiceConfig;
use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> ExitCode {
    eprintln!("usage: des-server [--config <file.json>]");
    eprintln!("  env overrides: DES_LISTEN, DES_STORE, DES_TIER_POLICY, DES_SIGNING_KEY, DES_SIGNER_ID, DES_DEPLOYMENT_KEY");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().init();

    let mut args = std::env::args().skip(1);
    let mut config_path: Option<PathBuf> = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => match args.next() {
                Some(p) => config_path = Some(PathBuf::from(p)),
                None => return usage(),
            },
            "--help" | "-h" => {
                return usage();
            }
            _ => return usage(),
        }
    }

    let cfg = match ServiceConfig::load(config_path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(des_server::serve(cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("server error: {e}");
            ExitCode::FAILURE
        }
    }
}
