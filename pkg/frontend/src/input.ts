/** Keyboard bindings: arrows move, space interacts. Action codes match the
 * environment's stable encoding 0..5. */

export const ACTION = {
  up: 0,
  down: 1,
  left: 2,
  right: 3,
  noop: 4,
  interact: 5,
} as const;

const KEY_BINDINGS: Record<string, number> = {
  ArrowUp: ACTION.up,
  ArrowDown: ACTION.down,
  ArrowLeft: ACTION.left,
  ArrowRight: ACTION.right,
  " ": ACTION.interact,
  Space: ACTION.interact,
};

/** Map a key event's key value to an action code, or null for unbound keys. */
export function keyToAction(key: string): number | null {
  const action = KEY_BINDINGS[key];
  return action === undefined ? null : action;
}
