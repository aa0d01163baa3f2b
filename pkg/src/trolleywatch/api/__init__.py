"""HTTP interface: REST endpoints plus a server-sent event stream."""
