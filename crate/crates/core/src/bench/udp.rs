//! UDP endpoints that move a frame's datagrams in few system calls.
//!
//! On Linux the sender uses segmentation offload (`UDP_SEGMENT`): one send of
//! up to 64 equal-size datagrams laid out back to back, split by the kernel.
//! The receiver uses `UDP_GRO` and splits coalesced buffers at the segment
//! size reported in the control message. Each datagram on the wire is the
//! same as with one send per datagram. Both ends fall back to one system
//! call per datagram where offload is unavailable.

use std::io;
use std::net::UdpSocket;

const MAX_SEGMENTS: usize = 64;
const MAX_UDP_PAYLOAD: usize = 65_507;

pub(crate) struct BatchSender {
    sock: UdpSocket,
    /// Segment size while offload is on.
    segment: Option<usize>,
}

impl BatchSender {
    /// `segment` is the size of every datagram but possibly the last of a
    /// frame.
    pub fn new(sock: UdpSocket, segment: usize, offload: bool) -> Self {
        let segment = (offload && sys::set_segment_size(&sock, segment).is_ok()).then_some(segment);
        Self { sock, segment }
    }

    pub fn offloaded(&self) -> bool {
        self.segment.is_some()
    }

    /// Sends a frame encoded as consecutive datagrams, all `segment` bytes
    /// long except possibly the last.
    pub fn send_frame(&mut self, wire: &[u8], segment: usize) -> io::Result<()> {
        if let Some(seg) = self.segment {
            debug_assert_eq!(seg, segment);
            let per_send = (MAX_UDP_PAYLOAD / seg).clamp(1, MAX_SEGMENTS);
            let mut sent = 0;
            for group in wire.chunks(per_send * seg) {
                match send_retry(&self.sock, group) {
                    Ok(()) => sent += group.len(),
                    // EIO: the route cannot segment; continue without offload
                    Err(e) if e.raw_os_error() == Some(5) => {
                        let _ = sys::set_segment_size(&self.sock, 0);
                        self.segment = None;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if self.segment.is_some() {
                return Ok(());
            }
            return self.send_each(&wire[sent..], segment);
        }
        self.send_each(wire, segment)
    }

    fn send_each(&self, wire: &[u8], segment: usize) -> io::Result<()> {
        for d in wire.chunks(segment) {
            send_retry(&self.sock, d)?;
        }
        Ok(())
    }
}

fn transient(e: &io::Error) -> bool {
    e.kind() == io::ErrorKind::WouldBlock
        || e.kind() == io::ErrorKind::Interrupted
        || e.raw_os_error() == Some(105) // ENOBUFS
}

/// Retries briefly when the kernel reports a full socket buffer.
fn send_retry(sock: &UdpSocket, buf: &[u8]) -> io::Result<()> {
    loop {
        match sock.send(buf) {
            Ok(_) => return Ok(()),
            Err(e) if transient(&e) => std::thread::yield_now(),
            Err(e) => return Err(e),
        }
    }
}

pub(crate) struct BatchReceiver {
    sock: UdpSocket,
    coalescing: bool,
    buf: Vec<u8>,
}

impl BatchReceiver {
    pub fn new(sock: UdpSocket, offload: bool) -> Self {
        let coalescing = offload && sys::enable_gro(&sock).is_ok();
        Self {
            sock,
            coalescing,
            buf: vec![0u8; 65_536],
        }
    }

    pub fn offloaded(&self) -> bool {
        self.coalescing
    }

    pub fn socket(&self) -> &UdpSocket {
        &self.sock
    }

    /// Waits for the next receive (bounded by the socket read timeout) and
    /// hands each datagram in it to `f`.
    pub fn recv(&mut self, mut f: impl FnMut(&[u8])) -> io::Result<()> {
        let (n, segment) = if self.coalescing {
            sys::recv_coalesced(&self.sock, &mut self.buf)?
        } else {
            (self.sock.recv(&mut self.buf)?, None)
        };
        match segment {
            Some(seg) if seg > 0 => self.buf[..n].chunks(seg).for_each(&mut f),
            _ => f(&self.buf[..n]),
        }
        Ok(())
    }
}

#[cfg(target_os = "linux")]
mod sys {
    use std::io;
    use std::mem::{size_of, zeroed};
    use std::net::UdpSocket;
    use std::os::fd::AsRawFd;

    fn set_int(sock: &UdpSocket, opt: libc::c_int, value: libc::c_int) -> io::Result<()> {
        // SAFETY: the value pointer and length describe a live c_int.
        let r = unsafe {
            libc::setsockopt(
                sock.as_raw_fd(),
                libc::SOL_UDP,
                opt,
                (&value as *const libc::c_int).cast(),
                size_of::<libc::c_int>() as libc::socklen_t,
            )
        };
        if r == 0 {
            Ok(())
        } else {
            Err(io::Error::last_os_error())
        }
    }

    pub fn set_segment_size(sock: &UdpSocket, size: usize) -> io::Result<()> {
        set_int(sock, libc::UDP_SEGMENT, size as libc::c_int)
    }

    pub fn enable_gro(sock: &UdpSocket) -> io::Result<()> {
        set_int(sock, libc::UDP_GRO, 1)
    }

    /// One `recvmsg`; returns the byte count and the segment size when the
    /// kernel coalesced several datagrams.
    pub fn recv_coalesced(sock: &UdpSocket, buf: &mut [u8]) -> io::Result<(usize, Option<usize>)> {
        let mut iov = libc::iovec {
            iov_base: buf.as_mut_ptr().cast(),
            iov_len: buf.len(),
        };
        // u64 storage keeps the control buffer aligned for cmsghdr
        let mut control = [0u64; 8];
        // SAFETY: all-zero is a valid msghdr; the pointers set below stay
        // valid for the duration of the call.
        let mut msg: libc::msghdr = unsafe { zeroed() };
        msg.msg_iov = &mut iov;
        msg.msg_iovlen = 1;
        msg.msg_control = control.as_mut_ptr().cast();
        msg.msg_controllen = size_of::<[u64; 8]>() as _;
        // SAFETY: `msg` describes `buf` and `control`, both live and writable.
        let n = unsafe { libc::recvmsg(sock.as_raw_fd(), &mut msg, 0) };
        if n < 0 {
            return Err(io::Error::last_os_error());
        }
        let mut segment = None;
        // SAFETY: the CMSG_* walk stays within `msg_controllen` as written by
        // the kernel, and UDP_GRO data is one c_int.
        unsafe {
            let mut c = libc::CMSG_FIRSTHDR(&msg);
            while !c.is_null() {
                if (*c).cmsg_level == libc::SOL_UDP && (*c).cmsg_type == libc::UDP_GRO {
                    let v = std::ptr::read_unaligned(libc::CMSG_DATA(c).cast::<libc::c_int>());
                    segment = usize::try_from(v).ok();
                }
                c = libc::CMSG_NXTHDR(&msg, c);
            }
        }
        Ok((n as usize, segment))
    }
}

#[cfg(not(target_os = "linux"))]
mod sys {
    use std::io;
    use std::net::UdpSocket;

    fn unsupported() -> io::Error {
        io::Error::new(io::ErrorKind::Unsupported, "UDP offload needs Linux")
    }

    pub fn set_segment_size(_: &UdpSocket, _: usize) -> io::Result<()> {
        Err(unsupported())
    }

    pub fn enable_gro(_: &UdpSocket) -> io::Result<()> {
        Err(unsupported())
    }

    pub fn recv_coalesced(sock: &UdpSocket, buf: &mut [u8]) -> io::Result<(usize, Option<usize>)> {
        Ok((sock.recv(buf)?, None))
    }
}
