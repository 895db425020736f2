//! Entry points for congra: the dialog gateway used by `congra serve`.

pub mod gateway;
