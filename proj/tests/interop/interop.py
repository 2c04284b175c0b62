#!/usr/bin/env python3
"""Interop peers for the bus acceptance check.

  interop.py broker PORT   run an amqtt broker on 127.0.0.1:PORT until killed
  interop.py client PORT   exercise a broker on 127.0.0.1:PORT with paho-mqtt

Exits 77 when the third-party packages are missing.
"""

import asyncio
import sys
import threading

SKIP = 77


def run_broker(port: int) -> int:
    try:
        from amqtt.broker import Broker
    except ImportError as exc:
        print(f"amqtt unavailable: {exc}", file=sys.stderr)
        return SKIP

    async def serve() -> None:
        broker = Broker({"listeners": {"default": {"type": "tcp", "bind": f"127.0.0.1:{port}"}}})
        await broker.start()
        print("ready", flush=True)
        await asyncio.Event().wait()

    asyncio.run(serve())
    return 0


def run_client(port: int) -> int:
    try:
        import paho.mqtt.client as mqtt
    except ImportError as exc:
        print(f"paho-mqtt unavailable: {exc}", file=sys.stderr)
        return SKIP

    received = []
    done = threading.Event()
    subscribed = threading.Event()
    expected = [(f"interop/{q}/{i}", f"msg-{q}-{i}".encode(), q) for q in (0, 1) for i in range(20)]

    def on_subscribe(client, userdata, mid, reason_codes, properties):
        subscribed.set()

    def on_message(client, userdata, msg):
        received.append((msg.topic, msg.payload, msg.qos))
        if len(received) == len(expected):
            done.set()

    client = mqtt.Client(mqtt.CallbackAPIVersion.VERSION2, client_id="paho-interop", protocol=mqtt.MQTTv311)
    client.on_subscribe = on_subscribe
    client.on_message = on_message
    client.connect("127.0.0.1", port, keepalive=30)
    client.loop_start()
    try:
        client.subscribe("interop/#", qos=1)
        if not subscribed.wait(5):
            print("no SUBACK", file=sys.stderr)
            return 1
        for topic, payload, qos in expected:
            info = client.publish(topic, payload, qos=qos)
            if qos:
                info.wait_for_publish(5)
                if not info.is_published():
                    print(f"no PUBACK for {topic}", file=sys.stderr)
                    return 1
        if not done.wait(5):
            print(f"received {len(received)} of {len(expected)}", file=sys.stderr)
            return 1
        if [(t, p) for t, p, _ in received] != [(t, p) for t, p, _ in expected]:
            print("messages out of order or altered", file=sys.stderr)
            return 1
        if [q for _, _, q in received] != [q for _, _, q in expected]:
            print("delivered QoS differs from the publish QoS", file=sys.stderr)
            return 1
    finally:
        client.disconnect()
        client.loop_stop()
    print("ok")
    return 0


def main() -> int:
    if len(sys.argv) != 3 or sys.argv[1] not in ("broker", "client"):
        print(__doc__, file=sys.stderr)
        return 2
    port = int(sys.argv[2])
    return run_broker(port) if sys.argv[1] == "broker" else run_client(port)


if __name__ == "__main__":
    sys.exit(main())
