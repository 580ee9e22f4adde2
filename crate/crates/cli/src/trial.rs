use clap::Subcommand;
use serde::Serialize;

use covbal_api::{CreateTrialRequest, EnrollRequest, Standardization};
use covbal_client::Client;
use covbal_core::trial_core::{Method, MethodConfig};

use crate::{apply_params, emit, CliError, CliResult};

#[derive(Subcommand)]
pub enum TrialCommand {
    /// Create a trial and print its id.
    Create {
        #[arg(long, env = "COVBAL_SERVER", default_value = "http://127.0.0.1:8077")]
        server: String,
        #[arg(long)]
        method: Method,
        /// Target number of subjects.
        #[arg(long)]
        n: usize,
        /// Comma-separated covariate names.
        #[arg(long, value_delimiter = ',', required = true)]
        covariates: Vec<String>,
        /// Method parameter `key=value`, repeatable (see `simulate --help`).
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Trial seed; the server's seed policy applies if omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Freeze standardization after the block phase instead of refitting at every enrollment.
        #[arg(long)]
        freeze_after_block: bool,
    },
    /// Enroll one subject and print the resulting event.
    Enroll {
        #[arg(long, env = "COVBAL_SERVER", default_value = "http://127.0.0.1:8077")]
        server: String,
        id: String,
        /// Comma-separated covariate values, in the trial's covariate order.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        subject_id: Option<String>,
    },
    /// Print a trial's state and balance metrics.
    Show {
        #[arg(long, env = "COVBAL_SERVER", default_value = "http://127.0.0.1:8077")]
        server: String,
        id: String,
    },
    /// Print a trial's event log.
    Events {
        #[arg(long, env = "COVBAL_SERVER", default_value = "http://127.0.0.1:8077")]
        server: String,
        id: String,
    },
    /// List trials.
    List {
        #[arg(long, env = "COVBAL_SERVER", default_value = "http://127.0.0.1:8077")]
        server: String,
    },
}

fn print<T: Serialize>(v: &T) -> CliResult<()> {
    emit(&(serde_json::to_string_pretty(v).expect("wire types serialize") + "\n"))
}

pub fn run(cmd: TrialCommand) -> CliResult<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        match cmd {
            TrialCommand::Create {
                server,
                method,
                n,
                covariates,
                params,
                seed,
                freeze_after_block,
            } => {
                let mut config = [MethodConfig::new(method, n)];
                apply_params(&mut config, &params)?;
                let [config] = config;
                let req = CreateTrialRequest {
                    config,
                    covariate_names: covariates,
                    seed,
                    standardization: if freeze_after_block {
                        Standardization::FreezeAfterBlock
                    } else {
                        Standardization::Continuous
                    },
                };
                let resp = Client::new(server).create_trial(&req).await?;
                emit(&format!("{}\n", resp.id))?;
            }
            TrialCommand::Enroll {
                server,
                id,
                values,
                subject_id,
            } => {
                let req = EnrollRequest {
                    subject_id,
                    covariates: values,
                };
                print(&Client::new(server).enroll(&id, &req).await?)?;
            }
            TrialCommand::Show { server, id } => print(&Client::new(server).trial(&id).await?)?,
            TrialCommand::Events { server, id } => print(&Client::new(server).events(&id).await?)?,
            TrialCommand::List { server } => print(&Client::new(server).list_trials().await?)?,
        }
        Ok::<(), CliError>(())
    })
}
