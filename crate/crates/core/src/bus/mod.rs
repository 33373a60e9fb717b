//! Output side of the engine: the pose bus codec, the control grammar and
//! session logs.

pub mod control;
pub mod posebus;
pub mod session;

pub use control::{parse_control, ControlMessage, ControlRequest, ServerMessage};
pub use posebus::{decode_pose_msg, encode_pose_msg, PoseBusError, PoseMessage};
pub use session::{read_session, replay, SessionError, SessionLog, SessionWriter, Verdict};
