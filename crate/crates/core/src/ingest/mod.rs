//! File formats, run configuration and detector pulse binning.

mod config;
mod formats;
mod pulses;

pub use config::RunConfig;
pub use formats::{
    format_number, read_diff_csv, read_photon_csv, read_tally_csv, read_transition_csv, write_diff_csv,
    write_photon_csv, write_tally_csv, write_transition_csv,
};
pub use pulses::{
    bin_pulse_energies, build_tally, read_pulse_csv, Binning, Channel, PulseEnergyRecord, MIN_RECORDS,
};
