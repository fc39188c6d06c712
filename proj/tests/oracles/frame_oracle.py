"""Reference CRC-16/CCITT-FALSE and frame packing, written independently of
the C++ codec. Writes the golden frame vector."""
import binascii
import struct
import sys
from pathlib import Path


def crc16_ccitt_false(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


def pack_frame(node_id, seq, temp_centi_c, lat_e7, lon_e7, battery_mv, version=1):
    header = 0xA4 | version
    body = struct.pack(">BHHhiiH", header, node_id, seq, temp_centi_c, lat_e7, lon_e7, battery_mv)
    return body + struct.pack(">H", crc16_ccitt_false(body))


def main(out_dir: Path) -> None:
    check = crc16_ccitt_false(b"123456789")
    assert check == 0x29B1, hex(check)
    assert binascii.crc_hqx(b"123456789", 0xFFFF) == check
    frame = pack_frame(7, 42, 2503, 200000000, 1101234560, 3700)
    assert len(frame) == 19
    assert binascii.crc_hqx(frame[:17], 0xFFFF) == int.from_bytes(frame[17:], "big")
    (out_dir / "frame_node7_seq42.hex").write_text(
        "# node 7, seq 42, temp 2503, lat_e7 200000000, lon_e7 1101234560, battery 3700\n"
        + " ".join(f"{b:02x}" for b in frame) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
