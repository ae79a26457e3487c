//! Just enough DER to walk a PKCS#7 signature block to its first
//! certificate's serial number. No signature validation.

use super::ApkError;

pub(crate) const TAG_INTEGER: u8 = 0x02;
pub(crate) const TAG_OID: u8 = 0x06;
pub(crate) const TAG_SEQUENCE: u8 = 0x30;
pub(crate) const TAG_SET: u8 = 0x31;
pub(crate) const TAG_CONTEXT_0: u8 = 0xa0;

/// 1.2.840.113549.1.7.2, pkcs7-signedData.
pub(crate) const OID_SIGNED_DATA: &[u8] = &[0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x02];

/// One tag-length-value element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tlv<'a> {
    pub tag: u8,
    pub content: &'a [u8],
}

fn malformed(what: &str) -> ApkError {
    ApkError::MalformedDer(what.to_string())
}

/// Splits the leading element off `input`.
pub fn read_tlv(input: &[u8]) -> Result<(Tlv<'_>, &[u8]), ApkError> {
    let (&tag, rest) = input.split_first().ok_or_else(|| malformed("unexpected end of input"))?;
    if tag & 0x1f == 0x1f {
        return Err(malformed("high tag numbers are not supported"));
    }
    let (&first, rest) = rest.split_first().ok_or_else(|| malformed("missing length"))?;
    let (len, rest) = match first {
        0x00..=0x7f => (first as usize, rest),
        0x80 => return Err(malformed("indefinite length is not DER")),
        0x81..=0x84 => {
            let n = (first & 0x7f) as usize;
            if rest.len() < n {
                return Err(malformed("truncated length"));
            }
            let len = rest[..n].iter().fold(0usize, |acc, &b| (acc << 8) | b as usize);
            (len, &rest[n..])
        }
        _ => return Err(malformed("length field too wide")),
    };
    if rest.len() < len {
        return Err(malformed("element runs past end of input"));
    }
    let (content, rest) = rest.split_at(len);
    Ok((Tlv { tag, content }, rest))
}

fn expect<'a>(input: &'a [u8], tag: u8, what: &str) -> Result<(&'a [u8], &'a [u8]), ApkError> {
    let (tlv, rest) = read_tlv(input)?;
    if tlv.tag != tag {
        return Err(ApkError::MalformedDer(format!(
            "expected {what} (tag {tag:#04x}), found tag {:#04x}",
            tlv.tag
        )));
    }
    Ok((tlv.content, rest))
}

/// Serial number bytes (two's complement, as encoded) of the first
/// certificate in a PKCS#7 SignedData blob.
pub fn first_certificate_serial(blob: &[u8]) -> Result<&[u8], ApkError> {
    let (content_info, _) = expect(blob, TAG_SEQUENCE, "ContentInfo")?;
    let (oid, rest) = expect(content_info, TAG_OID, "contentType")?;
    if oid != OID_SIGNED_DATA {
        return Err(malformed("content type is not signedData"));
    }
    let (explicit, _) = expect(rest, TAG_CONTEXT_0, "[0] content")?;
    let (signed_data, _) = expect(explicit, TAG_SEQUENCE, "SignedData")?;
    let (_, rest) = expect(signed_data, TAG_INTEGER, "version")?;
    let (_, rest) = expect(rest, TAG_SET, "digestAlgorithms")?;
    let (_, rest) = expect(rest, TAG_SEQUENCE, "encapContentInfo")?;
    let (certificates, _) = expect(rest, TAG_CONTEXT_0, "[0] certificates")?;
    let (certificate, _) = expect(certificates, TAG_SEQUENCE, "Certificate")?;
    let (tbs, _) = expect(certificate, TAG_SEQUENCE, "TBSCertificate")?;

    let (first, rest) = read_tlv(tbs)?;
    let serial = if first.tag == TAG_CONTEXT_0 {
        expect(rest, TAG_INTEGER, "serialNumber")?.0
    } else if first.tag == TAG_INTEGER {
        first.content
    } else {
        return Err(malformed("TBSCertificate does not start with version or serial"));
    };
    if serial.is_empty() {
        return Err(malformed("empty serialNumber"));
    }
    Ok(serial)
}
