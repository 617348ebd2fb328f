import bridge_env  # noqa: F401  (sys.path setup for the bridge sources)
