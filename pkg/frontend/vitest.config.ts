import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // the integration suite boots the real Python API server
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
