pub mod rng;
pub mod sfr;
pub mod cha;
pub mod qp;
pub mod uncertainty;
pub mod dispatch;
pub mod horizon;
pub mod desk;
pub mod io;
