//! Random linear network coding over GF(2^8), network-coded tunnel endpoints,
//! and a deterministic satellite-link simulator for comparing plain TCP with
//! TCP carried through the tunnel.

pub mod codec;
pub mod event;
pub mod framing;
pub mod gf256;
pub mod harness;
pub mod link;
pub mod tcp;
pub mod time;
pub mod tunnel;

pub use codec::{CodecConfig, CodecError, CodedPacket, DecodeStatus, Decoder, Encoder, Generation};
pub use framing::FramingError;
pub use event::EventQueue;
pub use gf256::Gf256;
pub use link::{GilbertElliott, Link, LinkError, LinkProfile, LinkStats, OfferOutcome};
pub use tcp::{bdp, LossSignal, TcpConfig, TcpReceiver, TcpSender, TcpState};
pub use time::{SimDuration, SimTime};
pub use tunnel::{Role, TunnelEndpoint, TunnelError, TunnelStats};
