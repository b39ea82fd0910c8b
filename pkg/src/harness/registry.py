"""Experiment registry for subcommands and run events."""
import asyncio
import logging
from typing import Any, Callable, Coroutine, Dict, List

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    """Registry of subcommand handlers and per-event subscriber queues."""

    def __init__(self) -> None:
        """Initialize the registry."""
        self.commands: Dict[str, Callable[..., Coroutine[Any, Any, Any]]] = {}
        self.event_queues: Dict[str, List[asyncio.Queue]] = {}

    def register_command(self, name: str, handler: Callable[..., Coroutine[Any, Any, Any]]) -> None:
        """Register a subcommand with its async handler."""
        self.commands[name] = handler
        logger.debug(f"Registered command: {name}")

    def get_command(self, name: str) -> Callable[..., Coroutine[Any, Any, Any]]:
        """Get a subcommand handler by name."""
        if name not in self.commands:
            raise ValueError(f"Command not found: {name}")
        return self.commands[name]

    def subscribe(self, event_name: str) -> asyncio.Queue:
        """Subscribe to an event and get a queue for receiving it."""
        queue: asyncio.Queue = asyncio.Queue()
        self.event_queues.setdefault(event_name, []).append(queue)
        logger.debug(f"Subscribed to event: {event_name}")
        return queue

    def unsubscribe(self, event_name: str, queue: asyncio.Queue) -> None:
        """Unsubscribe a queue from an event."""
        if event_name in self.event_queues and queue in self.event_queues[event_name]:
            self.event_queues[event_name].remove(queue)
            logger.debug(f"Unsubscribed from event: {event_name}")

    async def publish(self, event_name: str, data: Dict[str, Any]) -> None:
        """Publish an event to all subscribers."""
        event = {"name": event_name, "data": data}
        for queue in self.event_queues.get(event_name, []):
            await queue.put(event)
        logger.debug(f"Published event: {event_name}")
