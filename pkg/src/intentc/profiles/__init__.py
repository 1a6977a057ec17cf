"""Action-type profiles bundled with the compiler (``<action_type>.intent``)."""
